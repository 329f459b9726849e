//! The three-dimensional Heisenberg group in upper-triangular matrix
//! coordinates.
//!
//! A point `(a, b, c)` stands for the matrix
//!
//! ```text
//! | 1  a  c |
//! | 0  1  b |
//! | 0  0  1 |
//! ```
//!
//! so the product is `(a, b, c)·(a', b', c') = (a + a', b + b', c + c' + a b')`.
//! The horizontal generators are `P = (1, 0, 0)` and `Q = (0, 1, 0)`; their
//! commutator is the central direction `Z = (0, 0, 1)`.
//!
//! Gauges (Korányi, Carnot–Carathéodory) are defined through the symmetrized
//! center coordinate `z = c − ab/2`, in which inversion is `(x, y, z) ↦ −(x, y, z)`.

use std::f64::consts::PI;
use std::ops::Mul;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupElement {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement { a: 0.0, b: 0.0, c: 0.0 };

    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        GroupElement { a, b, c }
    }

    /// `exp(tZ)`, a central element.
    pub const fn center(t: f64) -> Self {
        GroupElement { a: 0.0, b: 0.0, c: t }
    }

    pub fn multiply(self, other: GroupElement) -> GroupElement {
        GroupElement { a: self.a + other.a, b: self.b + other.b, c: self.c + other.c + self.a * other.b }
    }

    pub fn inverse(self) -> GroupElement {
        GroupElement { a: -self.a, b: -self.b, c: self.a * self.b - self.c }
    }

    /// The grading automorphism `(a, b, c) ↦ (ra, rb, r²c)`.
    pub fn dilate(self, r: f64) -> Result<GroupElement> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!("dilation factor must be positive, got {r}")));
        }
        Ok(self.dilate_unchecked(r))
    }

    #[inline]
    pub(crate) fn dilate_unchecked(self, r: f64) -> GroupElement {
        GroupElement { a: r * self.a, b: r * self.b, c: r * r * self.c }
    }

    /// Symmetrized coordinates `(x, y, z)` with `z = c − ab/2`.
    #[inline]
    pub fn symmetrized(self) -> [f64; 3] {
        [self.a, self.b, self.c - 0.5 * self.a * self.b]
    }

    #[inline]
    pub fn from_symmetrized(x: f64, y: f64, z: f64) -> GroupElement {
        GroupElement { a: x, b: y, c: z + 0.5 * x * y }
    }

    pub fn is_finite(self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite()
    }

    pub fn max_abs_diff(self, other: GroupElement) -> f64 {
        (self.a - other.a).abs().max((self.b - other.b).abs()).max((self.c - other.c).abs())
    }
}

impl Mul for GroupElement {
    type Output = GroupElement;

    fn mul(self, rhs: GroupElement) -> GroupElement {
        self.multiply(rhs)
    }
}

pub fn multiply(g: GroupElement, h: GroupElement) -> GroupElement {
    g.multiply(h)
}

pub fn inverse(g: GroupElement) -> GroupElement {
    g.inverse()
}

pub fn dilate(g: GroupElement, r: f64) -> Result<GroupElement> {
    g.dilate(r)
}

/// A dilation `S_r`, optionally composed with a left translation
/// (`S_{x,r} = l_x ∘ S_r`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dilation {
    r: f64,
}

impl Dilation {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!("dilation factor must be positive, got {r}")));
        }
        Ok(Dilation { r })
    }

    pub fn factor(&self) -> f64 {
        self.r
    }

    pub fn apply(&self, g: GroupElement) -> GroupElement {
        g.dilate_unchecked(self.r)
    }

    /// `x · S_r(g)`.
    pub fn apply_at(&self, x: GroupElement, g: GroupElement) -> GroupElement {
        x * g.dilate_unchecked(self.r)
    }

    /// `S_{x,r}^{-1}(p) = S_{1/r}(x^{-1} p)`.
    pub fn pull_back(&self, x: GroupElement, p: GroupElement) -> GroupElement {
        (x.inverse() * p).dilate_unchecked(1.0 / self.r)
    }

    /// Factor by which Lebesgue (Haar) measure is scaled.
    pub fn jacobian(&self) -> f64 {
        self.r.powi(4)
    }

    pub fn compose(&self, other: &Dilation) -> Dilation {
        Dilation { r: self.r * other.r }
    }
}

/// The Korányi gauge `((x² + y²)² + 16 z²)^{1/4}` in symmetrized coordinates.
pub fn koranyi_gauge(g: GroupElement) -> f64 {
    let [x, y, z] = g.symmetrized();
    let rho2 = x * x + y * y;
    (rho2 * rho2 + 16.0 * z * z).sqrt().sqrt()
}

pub fn koranyi_distance(g: GroupElement, h: GroupElement) -> f64 {
    koranyi_gauge(relative(h, g))
}

/// `h^{-1} g`, computed in symmetrized coordinates so that `relative(g, g)` is
/// exactly the identity. The fourth root in the gauges would otherwise turn a
/// rounding error of 1e-17 in the center coordinate into a distance of 1e-8.
pub fn relative(h: GroupElement, g: GroupElement) -> GroupElement {
    let [x0, y0, z0] = h.symmetrized();
    let [x1, y1, z1] = g.symmetrized();
    GroupElement::from_symmetrized(x1 - x0, y1 - y0, z1 - z0 + 0.5 * (y0 * x1 - x0 * y1))
}

const CC_MAX_ITER: usize = 200;

/// `φ − sin φ`, accurate for small `φ`.
fn phi_minus_sin(phi: f64) -> f64 {
    if phi < 1e-2 {
        let p2 = phi * phi;
        phi * p2 / 6.0 * (1.0 - p2 / 20.0 * (1.0 - p2 / 42.0))
    } else {
        phi - phi.sin()
    }
}

/// Carnot–Carathéodory norm of `g` with `P, Q` orthonormal.
///
/// Geodesics from the identity are horizontal lifts of circular arcs; for a
/// target with planar chord `ρ` and symmetrized height `z` the turning angle `φ`
/// solves `(φ − sin φ) / (8 sin²(φ/2)) = |z| / ρ²` and the length is
/// `ρ φ / (2 sin(φ/2))`. `φ` is found by bisection until the length bracket is
/// within relative `tol`. Arcs turning by more than `π` are parametrized by
/// `ψ = 2π − φ` so that nearly closed circles keep full precision.
pub fn cc_norm(g: GroupElement, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if !g.is_finite() {
        return Err(Error::Numerical { routine: "cc_norm", detail: format!("non-finite input {g:?}") });
    }
    let [x, y, z] = g.symmetrized();
    let rho = x.hypot(y);
    let z = z.abs();
    if z == 0.0 {
        return Ok(rho);
    }
    if rho == 0.0 {
        return Ok(2.0 * (PI * z).sqrt());
    }
    let target = z / (rho * rho);
    // ratio(π) = π/8 separates the two parametrizations.
    let short_arc = target <= PI / 8.0;
    // (φ − sin φ, sin(φ/2), φ) as a function of the bisection variable.
    let eval = |t: f64| -> (f64, f64, f64) {
        let s = (0.5 * t).sin();
        if short_arc {
            (phi_minus_sin(t), s, t)
        } else {
            (2.0 * PI - t + t.sin(), s, 2.0 * PI - t)
        }
    };
    let ratio = |t: f64| {
        let (num, s, _) = eval(t);
        num / (8.0 * s * s)
    };
    let length = |t: f64| {
        let (_, s, phi) = eval(t);
        if phi == 0.0 {
            rho
        } else if s == 0.0 {
            f64::INFINITY
        } else {
            rho * phi / (2.0 * s)
        }
    };
    let (mut lo, mut hi) = (0.0_f64, PI);
    for _ in 0..CC_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        // ratio increases in φ; in the ψ parametrization it decreases.
        if (ratio(mid) < target) == short_arc {
            lo = mid;
        } else {
            hi = mid;
        }
        let (l_a, l_b) = (length(lo), length(hi));
        let (l_min, l_max) = if l_a <= l_b { (l_a, l_b) } else { (l_b, l_a) };
        if l_max.is_finite() && l_max - l_min <= tol * l_min {
            return Ok(0.5 * (l_min + l_max));
        }
    }
    Err(Error::Numerical {
        routine: "cc_norm",
        detail: format!(
            "bisection did not reach relative tolerance {tol} in {CC_MAX_ITER} steps \
             (bracket [{lo}, {hi}], chord {rho}, height {z})"
        ),
    })
}

/// Carnot–Carathéodory distance `|h^{-1} g|_cc`.
pub fn cc_distance(g: GroupElement, h: GroupElement, tol: f64) -> Result<f64> {
    cc_norm(relative(h, g), tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gauge {
    Koranyi,
    Cc,
}

/// Tolerance used when a ball test needs the CC gauge.
pub const BALL_CC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: GroupElement,
    pub radius: f64,
    pub gauge: Gauge,
}

impl BallSpec {
    pub fn new(center: GroupElement, radius: f64, gauge: Gauge) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(BallSpec { center, radius, gauge })
    }

    pub fn contains(&self, p: GroupElement) -> bool {
        let g = relative(self.center, p);
        match self.gauge {
            Gauge::Koranyi => koranyi_gauge(g) <= self.radius,
            Gauge::Cc => cc_norm(g, BALL_CC_TOL).map(|d| d <= self.radius).unwrap_or(false),
        }
    }

    /// Half-extent of a box in symmetrized coordinates that contains the
    /// ball centered at the identity.
    fn bounding_half_extent(&self) -> [f64; 3] {
        let r = self.radius;
        match self.gauge {
            Gauge::Koranyi => [r, r, 0.25 * r * r],
            // The tallest CC sphere point is the full-circle geodesic of length r.
            Gauge::Cc => [r, r, r * r / (4.0 * PI)],
        }
    }

    /// Closed-form Haar measure where one is known (Korányi: `π² r⁴ / 8`).
    pub fn exact_volume(&self) -> Option<f64> {
        match self.gauge {
            Gauge::Koranyi => Some(koranyi_unit_ball_volume() * self.radius.powi(4)),
            Gauge::Cc => None,
        }
    }

    /// Uniform (Haar) sample from the ball by rejection in symmetrized coordinates.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        let [hx, hy, hz] = self.bounding_half_extent();
        let unit = BallSpec { center: GroupElement::IDENTITY, ..*self };
        loop {
            let x = rng.gen_range(-hx..=hx);
            let y = rng.gen_range(-hy..=hy);
            let z = rng.gen_range(-hz..=hz);
            let g = GroupElement::from_symmetrized(x, y, z);
            if unit.contains(g) {
                return self.center * g;
            }
        }
    }

    /// Monte-Carlo Haar measure with the standard error of the estimate.
    pub fn monte_carlo_volume<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> (f64, f64) {
        let [hx, hy, hz] = self.bounding_half_extent();
        let box_volume = 8.0 * hx * hy * hz;
        let unit = BallSpec { center: GroupElement::IDENTITY, ..*self };
        let mut hits = 0usize;
        for _ in 0..samples {
            let x = rng.gen_range(-hx..=hx);
            let y = rng.gen_range(-hy..=hy);
            let z = rng.gen_range(-hz..=hz);
            if unit.contains(GroupElement::from_symmetrized(x, y, z)) {
                hits += 1;
            }
        }
        let p = hits as f64 / samples as f64;
        let se = (p * (1.0 - p) / samples as f64).sqrt();
        (box_volume * p, box_volume * se)
    }
}

/// `μ(B_1(e))` for the Korányi gauge: `∫_{ρ<1} ½√(1−ρ⁴) dA = π²/8`.
pub fn koranyi_unit_ball_volume() -> f64 {
    PI * PI / 8.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g(a: f64, b: f64, c: f64) -> GroupElement {
        GroupElement::new(a, b, c)
    }

    /// Product of the 3×3 upper-triangular matrices, written out independently.
    fn matrix_product(p: GroupElement, q: GroupElement) -> GroupElement {
        let m1 = [[1.0, p.a, p.c], [0.0, 1.0, p.b], [0.0, 0.0, 1.0]];
        let m2 = [[1.0, q.a, q.c], [0.0, 1.0, q.b], [0.0, 0.0, 1.0]];
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    out[i][j] += m1[i][k] * m2[k][j];
                }
            }
        }
        g(out[0][1], out[1][2], out[0][2])
    }

    #[test]
    fn multiply_examples() {
        assert_eq!(g(1.0, 0.0, 0.0) * g(0.0, 1.0, 0.0), g(1.0, 1.0, 1.0));
        assert_eq!(matrix_product(g(1.0, 0.0, 0.0), g(0.0, 1.0, 0.0)), g(1.0, 1.0, 1.0));
        let x = g(2.5, -1.0, 0.3);
        assert_eq!(GroupElement::IDENTITY * x, x);
        // xyx⁻¹y⁻¹ is the central generator.
        let comm = g(1.0, 0.0, 0.0) * g(0.0, 1.0, 0.0) * g(-1.0, 0.0, 0.0) * g(0.0, -1.0, 0.0);
        assert_eq!(comm, g(0.0, 0.0, 1.0));
    }

    #[test]
    fn multiply_matches_matrix_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p = g(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let q = g(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            assert!((p * q).max_abs_diff(matrix_product(p, q)) < 1e-12);
        }
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(GroupElement::IDENTITY.inverse(), GroupElement::IDENTITY);
        assert_eq!(g(1.0, 0.0, 0.0).inverse(), g(-1.0, 0.0, 0.0));
        assert_eq!(g(1.0, 1.0, 1.0).inverse(), g(-1.0, -1.0, 0.0));
    }

    #[test]
    fn dilate_examples() {
        assert_eq!(g(1.0, 1.0, 1.0).dilate(1.0).unwrap(), g(1.0, 1.0, 1.0));
        assert_eq!(g(1.0, 1.0, 1.0).dilate(2.0).unwrap(), g(2.0, 2.0, 4.0));
        assert!(g(1.0, 1.0, 1.0).dilate(0.0).is_err());
        assert!(g(1.0, 1.0, 1.0).dilate(-1.0).is_err());
        let d = Dilation::new(3.0).unwrap();
        assert_eq!(d.jacobian(), 81.0);
    }

    #[test]
    fn koranyi_examples() {
        let p = g(0.3, -0.2, 0.7);
        assert_eq!(koranyi_distance(p, p), 0.0);
        assert!((koranyi_distance(GroupElement::IDENTITY, g(-2.5, 0.0, 0.0)) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn cc_axis_values() {
        let tol = 1e-10;
        let d = cc_distance(GroupElement::IDENTITY, g(1.7, 0.0, 0.0), tol).unwrap();
        assert!((d - 1.7).abs() < 1e-12);
        for &s in &[1e-4, 0.01, 0.5, 2.0] {
            let d = cc_distance(GroupElement::IDENTITY, g(0.0, 0.0, s), tol).unwrap();
            assert!((d - 2.0 * (PI * s).sqrt()).abs() <= 2.0 * tol * d);
        }
    }

    #[test]
    fn cc_is_continuous_near_the_axes() {
        let tol = 1e-12;
        let d0 = cc_norm(g(0.0, 0.0, 1.0), tol).unwrap();
        let d1 = cc_norm(GroupElement::from_symmetrized(1e-7, 0.0, 1.0), tol).unwrap();
        assert!((d0 - d1).abs() < 1e-5);
        let h0 = cc_norm(g(1.0, 0.0, 0.0), tol).unwrap();
        let h1 = cc_norm(GroupElement::from_symmetrized(1.0, 0.0, 1e-9), tol).unwrap();
        assert!((h0 - h1).abs() < 1e-6);
    }

    #[test]
    fn cc_rejects_bad_input() {
        assert!(cc_norm(g(1.0, 0.0, 0.0), 0.0).is_err());
        assert!(matches!(cc_norm(g(f64::NAN, 0.0, 1.0), 1e-9), Err(Error::Numerical { .. })));
    }

    #[test]
    fn koranyi_ball_volume_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ball = BallSpec::new(GroupElement::IDENTITY, 1.0, Gauge::Koranyi).unwrap();
        let (v, se) = ball.monte_carlo_volume(200_000, &mut rng);
        assert!((v - koranyi_unit_ball_volume()).abs() < 4.0 * se);
    }
}
