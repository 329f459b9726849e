//! Word metric on the integer Heisenberg group and its balls `W_k`.

use std::collections::{HashMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::heisenberg::{cc_distance, BallSpec, Gauge, GroupElement};
use crate::metric::{DistanceMatrix, FiniteMetricSpace};

pub const DEFAULT_RADIUS_CAP: u32 = 6;

type Word = (i64, i64, i64);

fn mul(g: Word, h: Word) -> Word {
    (g.0 + h.0, g.1 + h.1, g.2 + h.2 + g.0 * h.1)
}

fn inv(g: Word) -> Word {
    (-g.0, -g.1, g.0 * g.1 - g.2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CayleySpec {
    generators: Vec<Word>,
    pub radius: u32,
    pub radius_cap: u32,
}

impl CayleySpec {
    /// Generators `x = (1,0,0)`, `y = (0,1,0)` and their inverses.
    pub fn standard(radius: u32) -> Self {
        CayleySpec {
            generators: vec![(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)],
            radius,
            radius_cap: DEFAULT_RADIUS_CAP,
        }
    }

    /// Custom generating set; must be closed under inverses and avoid the identity.
    pub fn with_generators(generators: &[[i64; 3]], radius: u32) -> Result<Self> {
        let gens: Vec<Word> = generators.iter().map(|g| (g[0], g[1], g[2])).collect();
        if gens.contains(&(0, 0, 0)) {
            return Err(Error::invalid("generating set contains the identity"));
        }
        if let Some(g) = gens.iter().find(|g| !gens.contains(&inv(**g))) {
            return Err(Error::invalid(format!("generator {g:?} has no inverse in the set")));
        }
        let mut dedup = gens.clone();
        dedup.sort_unstable();
        dedup.dedup();
        Ok(CayleySpec { generators: dedup, radius, radius_cap: DEFAULT_RADIUS_CAP })
    }

    pub fn with_cap(mut self, cap: u32) -> Self {
        self.radius_cap = cap;
        self
    }

    pub fn generators(&self) -> Vec<GroupElement> {
        self.generators.iter().map(|g| GroupElement::new(g.0 as f64, g.1 as f64, g.2 as f64)).collect()
    }

    /// Word lengths of every element of length at most `max_len`, in BFS order.
    fn lengths(&self, max_len: u32) -> (Vec<Word>, HashMap<Word, u32>) {
        let mut order = vec![(0, 0, 0)];
        let mut len = HashMap::from([((0, 0, 0), 0u32)]);
        let mut queue = VecDeque::from([(0i64, 0i64, 0i64)]);
        while let Some(g) = queue.pop_front() {
            let l = len[&g];
            if l == max_len {
                continue;
            }
            for &s in &self.generators {
                let h = mul(g, s);
                if let std::collections::hash_map::Entry::Vacant(e) = len.entry(h) {
                    e.insert(l + 1);
                    order.push(h);
                    queue.push_back(h);
                }
            }
        }
        (order, len)
    }

    /// Word length of `g` if it is at most `max_len`.
    pub fn word_length(&self, g: [i64; 3], max_len: u32) -> Option<u32> {
        self.lengths(max_len).1.get(&(g[0], g[1], g[2])).copied()
    }
}

/// The ball `W_k` with the word metric of the whole group restricted to it.
///
/// Distances come from a BFS out to radius `2k`, so `W_{k-1}` sits in `W_k`
/// isometrically. Points are listed in BFS order; unit weights.
pub fn generate_ball(spec: &CayleySpec) -> Result<FiniteMetricSpace> {
    let k = spec.radius;
    if k > spec.radius_cap {
        // |W_k| grows like k⁴; the count for the standard generators is about 0.44 k⁴.
        let estimate = (0.44 * (k as f64).powi(4)).ceil() as u64;
        return Err(Error::OverCap {
            what: "Cayley ball radius",
            requested: k as usize,
            cap: spec.radius_cap as usize,
            estimate,
        });
    }
    let (order, len) = spec.lengths(2 * k);
    let points: Vec<Word> = order.into_iter().filter(|g| len[g] <= k).collect();
    let n = points.len();
    let dist = DistanceMatrix::from_fn(n, |i, j| {
        let rel = mul(inv(points[i]), points[j]);
        len[&rel] as f64
    });
    let coords = points.iter().map(|g| GroupElement::new(g.0 as f64, g.1 as f64, g.2 as f64)).collect();
    Ok(FiniteMetricSpace { weights: vec![1.0; n], dist, coords: Some(coords) })
}

/// Indices in `W_k` (as produced by [`generate_ball`]) of the points of `W_j`, `j ≤ k`.
pub fn sub_ball_indices(ball: &FiniteMetricSpace, j: u32) -> Vec<usize> {
    (0..ball.len()).filter(|&i| ball.dist.get(0, i) <= j as f64).collect()
}

/// `n` Haar-uniform random points of the CC ball `B_radius(e)` with their
/// pairwise CC distances.
pub fn sample_cc_metric(n: usize, radius: f64, seed: u64) -> Result<FiniteMetricSpace> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 points, got {n}")));
    }
    let ball = BallSpec::new(GroupElement::IDENTITY, radius, Gauge::Cc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<GroupElement> = (0..n).map(|_| ball.sample(&mut rng)).collect();
    let mut dist = DistanceMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            dist.set(i, j, cc_distance(points[i], points[j], 1e-13)?);
        }
    }
    Ok(FiniteMetricSpace { weights: vec![1.0; n], dist, coords: Some(points) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_balls() {
        let w0 = generate_ball(&CayleySpec::standard(0)).unwrap();
        assert_eq!(w0.len(), 1);
        let w1 = generate_ball(&CayleySpec::standard(1)).unwrap();
        assert_eq!(w1.len(), 5);
        for i in 0..5 {
            for j in (i + 1)..5 {
                let d = w1.dist.get(i, j);
                assert!(d == 1.0 || d == 2.0);
            }
        }
    }

    #[test]
    fn center_word_length() {
        let spec = CayleySpec::standard(0);
        assert_eq!(spec.word_length([0, 0, 1], 8), Some(4));
        assert_eq!(spec.word_length([0, 0, 1], 3), None);
    }

    #[test]
    fn cap_is_enforced() {
        let err = generate_ball(&CayleySpec::standard(7)).unwrap_err();
        assert!(matches!(err, Error::OverCap { requested: 7, cap: 6, .. }));
    }

    #[test]
    fn generators_must_be_symmetric() {
        assert!(CayleySpec::with_generators(&[[1, 0, 0], [0, 1, 0]], 1).is_err());
        assert!(CayleySpec::with_generators(&[[0, 0, 0]], 1).is_err());
        assert!(CayleySpec::with_generators(&[[1, 0, 0], [-1, 0, 0]], 1).is_ok());
    }

    #[test]
    fn cc_sample_is_reproducible() {
        let a = sample_cc_metric(6, 1.0, 3).unwrap();
        let b = sample_cc_metric(6, 1.0, 3).unwrap();
        assert_eq!(a.dist.row_major(), b.dist.row_major());
        assert!(a.dist.pseudometric_defect() < 1e-9);
        let two = sample_cc_metric(2, 0.5, 1).unwrap();
        assert_eq!(two.dist.get(0, 1), two.dist.get(1, 0));
        assert!(sample_cc_metric(1, 1.0, 0).is_err());
    }
}
