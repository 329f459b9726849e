// `!(x > 0.0)` is used throughout to reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Library version embedded in experiment outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod alpha;
pub mod cayley;
pub mod collapse;
pub mod cuts;
pub mod distortion;
pub mod error;
pub mod grid;
pub mod heisenberg;
pub mod levels;
pub mod metric;
pub mod perimeter;
pub mod simplex;
pub mod straighten;

pub use cayley::CayleySpec;
pub use cuts::{Cut, CutMeasure, L1Map, Lines};
pub use error::{Error, Result};
pub use grid::{GridGeometry, GridSet, HalfSpace, Membership, SetMeasure};
pub use heisenberg::{BallSpec, Dilation, Gauge, GroupElement};
pub use metric::{DistanceMatrix, FiniteMetricSpace};
