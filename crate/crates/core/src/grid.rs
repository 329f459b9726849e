//! Voxel grids over a box in `(a, b, c)` coordinates, voxel sets, and vertical
//! half-spaces.
//!
//! Voxel `(i, j, k)` has index `(i·n_b + j)·n_c + k` and center
//! `lo + (i + ½, j + ½, k + ½)·cell`. Two families of horizontal lines
//! decompose the voxels:
//!
//! * P-lines are the integral curves of `P = ∂_a`: fixed `(j, k)`, `i` running.
//! * Q-lines are the integral curves `b ↦ (a, b, c₀ + ab)` of `Q = ∂_b + a∂_c`,
//!   snapped to the nearest voxel in `c`. With `s(i, j) = round(a_i b_j / dc)`,
//!   the Q-line with label `m` at column `(i, j)` passes through voxel
//!   `k = m + s(i, j)`.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cuts::{Cut, Line, Lines};
use crate::error::{Error, Result};
use crate::heisenberg::{BallSpec, GroupElement};

const GRID_MAGIC: &[u8; 4] = b"HGRD";
const GRID_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub res: [usize; 3],
}

impl Default for GridGeometry {
    /// `96 × 96 × 192` voxels over `[−1, 1]³`.
    fn default() -> Self {
        GridGeometry { lo: [-1.0; 3], hi: [1.0; 3], res: [96, 96, 192] }
    }
}

impl GridGeometry {
    pub fn new(lo: [f64; 3], hi: [f64; 3], res: [usize; 3]) -> Result<Self> {
        for d in 0..3 {
            if !(lo[d].is_finite() && hi[d].is_finite() && lo[d] < hi[d]) {
                return Err(Error::invalid(format!("bad box extent on axis {d}: [{}, {}]", lo[d], hi[d])));
            }
            if res[d] == 0 {
                return Err(Error::invalid(format!("zero resolution on axis {d}")));
            }
        }
        Ok(GridGeometry { lo, hi, res })
    }

    /// Uniform box `[−h, h]³`.
    pub fn cube(half: f64, res: [usize; 3]) -> Result<Self> {
        Self::new([-half; 3], [half; 3], res)
    }

    pub fn len(&self) -> usize {
        self.res[0] * self.res[1] * self.res[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell(&self) -> [f64; 3] {
        [0, 1, 2].map(|d| (self.hi[d] - self.lo[d]) / self.res[d] as f64)
    }

    pub fn voxel_volume(&self) -> f64 {
        let [da, db, dc] = self.cell();
        da * db * dc
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.res[1] + j) * self.res[2] + k
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let k = idx % self.res[2];
        let ij = idx / self.res[2];
        (ij / self.res[1], ij % self.res[1], k)
    }

    #[inline]
    pub fn axis_center(&self, d: usize, i: usize) -> f64 {
        self.lo[d] + (i as f64 + 0.5) * (self.hi[d] - self.lo[d]) / self.res[d] as f64
    }

    pub fn center(&self, idx: usize) -> GroupElement {
        let (i, j, k) = self.coords(idx);
        GroupElement::new(self.axis_center(0, i), self.axis_center(1, j), self.axis_center(2, k))
    }

    #[inline]
    fn axis_locate(&self, d: usize, x: f64) -> Option<usize> {
        let t = (x - self.lo[d]) / (self.hi[d] - self.lo[d]) * self.res[d] as f64;
        if t >= 0.0 && t < self.res[d] as f64 {
            Some(t as usize)
        } else {
            None
        }
    }

    /// The voxel containing `p`, if `p` is in the box.
    #[inline]
    pub fn locate(&self, p: GroupElement) -> Option<usize> {
        Some(self.index(self.axis_locate(0, p.a)?, self.axis_locate(1, p.b)?, self.axis_locate(2, p.c)?))
    }

    pub fn contains_point(&self, p: GroupElement) -> bool {
        (0..3).all(|d| {
            let x = [p.a, p.b, p.c][d];
            x >= self.lo[d] && x <= self.hi[d]
        })
    }

    /// Q-line offset `round(a_i b_j / dc)` of column `(i, j)`.
    #[inline]
    pub fn q_shift(&self, i: usize, j: usize) -> i64 {
        let dc = self.cell()[2];
        (self.axis_center(0, i) * self.axis_center(1, j) / dc).round() as i64
    }

    /// Largest `|a_i b_j − s(i, j)·dc|`: how far the snapped Q-lines sit from
    /// the true integral curves. At most half a c-cell.
    pub fn q_snap_error(&self) -> f64 {
        let dc = self.cell()[2];
        let mut worst = 0.0f64;
        for i in 0..self.res[0] {
            for j in 0..self.res[1] {
                let exact = self.axis_center(0, i) * self.axis_center(1, j);
                worst = worst.max((exact - self.q_shift(i, j) as f64 * dc).abs());
            }
        }
        worst
    }

    pub fn p_successor(&self, idx: usize) -> Option<usize> {
        let (i, j, k) = self.coords(idx);
        (i + 1 < self.res[0]).then(|| self.index(i + 1, j, k))
    }

    pub fn q_successor(&self, idx: usize) -> Option<usize> {
        let (i, j, k) = self.coords(idx);
        if j + 1 >= self.res[1] {
            return None;
        }
        let k2 = k as i64 + self.q_shift(i, j + 1) - self.q_shift(i, j);
        (k2 >= 0 && (k2 as usize) < self.res[2]).then(|| self.index(i, j + 1, k2 as usize))
    }

    /// Transverse weights `(db·dc, da·dc)` of P-lines and Q-lines.
    pub fn line_weights(&self) -> (f64, f64) {
        let [da, db, dc] = self.cell();
        (db * dc, da * dc)
    }

    /// All P-lines and Q-lines as explicit index lists. Both families
    /// partition the voxels.
    pub fn lines(&self) -> Lines {
        let [na, nb, nc] = self.res;
        let (wp, wq) = self.line_weights();
        let mut lines = Vec::new();
        for j in 0..nb {
            for k in 0..nc {
                lines.push(Line { indices: (0..na).map(|i| self.index(i, j, k)).collect(), weight: wp });
            }
        }
        for i in 0..na {
            let shifts: Vec<i64> = (0..nb).map(|j| self.q_shift(i, j)).collect();
            let (smin, smax) = (*shifts.iter().min().unwrap(), *shifts.iter().max().unwrap());
            for m in (-smax)..(nc as i64 - smin) {
                let mut current: Vec<usize> = Vec::new();
                for (j, &s) in shifts.iter().enumerate() {
                    let k = m + s;
                    if k >= 0 && (k as usize) < nc {
                        current.push(self.index(i, j, k as usize));
                    } else if !current.is_empty() {
                        lines.push(Line { indices: std::mem::take(&mut current), weight: wq });
                    }
                }
                if !current.is_empty() {
                    lines.push(Line { indices: current, weight: wq });
                }
            }
        }
        Lines { lines }
    }
}

/// Membership oracle for subsets of `ℍ`. `None` means the point lies outside
/// the region where the set is known.
pub trait Membership {
    fn member(&self, p: GroupElement) -> Option<bool>;
}

impl<M: Membership + ?Sized> Membership for &M {
    fn member(&self, p: GroupElement) -> Option<bool> {
        (**self).member(p)
    }
}

impl Membership for BallSpec {
    fn member(&self, p: GroupElement) -> Option<bool> {
        Some(self.contains(p))
    }
}

/// The vertical half-space `cos θ (a − a₀) + sin θ (b − b₀) ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub basepoint: GroupElement,
    pub normal_angle: f64,
}

impl HalfSpace {
    pub fn new(basepoint: GroupElement, normal_angle: f64) -> Self {
        HalfSpace { basepoint, normal_angle: normal_angle.rem_euclid(TAU) }
    }

    #[inline]
    pub fn contains(&self, p: GroupElement) -> bool {
        let (s, c) = self.normal_angle.sin_cos();
        c * (p.a - self.basepoint.a) + s * (p.b - self.basepoint.b) >= 0.0
    }

    /// Smallest angle between the two normals.
    pub fn angle_to(&self, other: &HalfSpace) -> f64 {
        let d = (self.normal_angle - other.normal_angle).rem_euclid(TAU);
        d.min(TAU - d)
    }
}

impl Membership for HalfSpace {
    fn member(&self, p: GroupElement) -> Option<bool> {
        Some(self.contains(p))
    }
}

/// A set of voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSet {
    geometry: GridGeometry,
    bits: Cut,
}

impl GridSet {
    pub fn empty(geometry: GridGeometry) -> Self {
        let n = geometry.len();
        GridSet { geometry, bits: Cut::empty(n) }
    }

    /// Voxels whose center satisfies `f`.
    pub fn from_fn(geometry: GridGeometry, mut f: impl FnMut(GroupElement) -> bool) -> Self {
        let bits = Cut::from_fn(geometry.len(), |idx| f(geometry.center(idx)));
        GridSet { geometry, bits }
    }

    /// Voxelization of a set: voxels whose center is a member.
    pub fn from_membership(geometry: GridGeometry, set: &impl Membership) -> Result<Self> {
        let mut missing = 0usize;
        let out = Self::from_fn(geometry, |p| match set.member(p) {
            Some(v) => v,
            None => {
                missing += 1;
                false
            }
        });
        if missing > 0 {
            return Err(Error::OutsideBox { clipped_fraction: missing as f64 / out.geometry.len() as f64 });
        }
        Ok(out)
    }

    pub fn from_cut(geometry: GridGeometry, bits: Cut) -> Result<Self> {
        if bits.len() != geometry.len() {
            return Err(Error::GeometryMismatch(format!(
                "{} bits for a grid of {} voxels",
                bits.len(),
                geometry.len()
            )));
        }
        Ok(GridSet { geometry, bits })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn bits(&self) -> &Cut {
        &self.bits
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        self.bits.contains(idx)
    }

    pub fn count(&self) -> usize {
        self.bits.count()
    }

    /// `μ(E)`: voxel volume times the number of voxels.
    pub fn measure(&self) -> f64 {
        self.geometry.voxel_volume() * self.count() as f64
    }

    pub fn complement(&self) -> GridSet {
        GridSet { geometry: self.geometry.clone(), bits: self.bits.complement() }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(GRID_MAGIC)?;
        w.write_all(&GRID_VERSION.to_le_bytes())?;
        for x in self.geometry.lo.iter().chain(&self.geometry.hi) {
            w.write_all(&x.to_le_bytes())?;
        }
        for r in self.geometry.res {
            w.write_all(&(r as u64).to_le_bytes())?;
        }
        w.write_all(&self.bits.to_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(Error::Format("not a grid set file".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != GRID_VERSION {
            return Err(Error::Format(format!("unsupported grid set version {version}")));
        }
        let mut f = [0.0f64; 6];
        let mut buf = [0u8; 8];
        for x in &mut f {
            r.read_exact(&mut buf)?;
            *x = f64::from_le_bytes(buf);
        }
        let mut res = [0usize; 3];
        for x in &mut res {
            r.read_exact(&mut buf)?;
            *x = usize::try_from(u64::from_le_bytes(buf))
                .map_err(|_| Error::Format("resolution overflows usize".into()))?;
        }
        let geometry =
            GridGeometry::new([f[0], f[1], f[2]], [f[3], f[4], f[5]], res).map_err(|e| Error::Format(e.to_string()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let bits = Cut::from_bytes(geometry.len(), &bytes)?;
        Ok(GridSet { geometry, bits })
    }
}

impl Membership for GridSet {
    #[inline]
    fn member(&self, p: GroupElement) -> Option<bool> {
        self.geometry.locate(p).map(|idx| self.bits.contains(idx))
    }
}

/// A finite weighted family of sets: the grid and analytic stand-ins for a
/// cut measure on `ℍ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SetMeasure<S> {
    atoms: Vec<(S, f64)>,
}

impl<S> Default for SetMeasure<S> {
    fn default() -> Self {
        SetMeasure { atoms: Vec::new() }
    }
}

impl<S> SetMeasure<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let mut out = Self::new();
        for (s, w) in atoms {
            out.push(s, w)?;
        }
        Ok(out)
    }

    pub fn push(&mut self, set: S, weight: f64) -> Result<()> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::invalid(format!("atom weight must be finite and nonnegative, got {weight}")));
        }
        self.atoms.push((set, weight));
        Ok(())
    }

    pub fn atoms(&self) -> &[(S, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    pub fn scaled(&self, t: f64) -> Result<Self>
    where
        S: Clone,
    {
        Self::from_atoms(self.atoms.iter().map(|(s, w)| (s.clone(), w * t)))
    }

    /// `d_Σ(p, q) = Σ_k w_k |χ_k(p) − χ_k(q)|`.
    pub fn distance(&self, p: GroupElement, q: GroupElement) -> Result<f64>
    where
        S: Membership,
    {
        let mut d = 0.0;
        for (s, w) in &self.atoms {
            match (s.member(p), s.member(q)) {
                (Some(x), Some(y)) => {
                    if x != y {
                        d += w;
                    }
                }
                _ => return Err(Error::OutsideBox { clipped_fraction: 1.0 }),
            }
        }
        Ok(d)
    }
}
