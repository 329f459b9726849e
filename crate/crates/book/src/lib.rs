//! The guide in `book/src`, one module per chapter, so that `cargo test`
//! compiles and runs every code block.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/group.md")]
pub mod group {}

#[doc = include_str!("../../../book/src/cuts.md")]
pub mod cuts {}

#[doc = include_str!("../../../book/src/distortion.md")]
pub mod distortion {}

#[doc = include_str!("../../../book/src/cayley.md")]
pub mod cayley {}

#[doc = include_str!("../../../book/src/perimeter.md")]
pub mod perimeter {}

#[doc = include_str!("../../../book/src/alpha.md")]
pub mod alpha {}

#[doc = include_str!("../../../book/src/collapse.md")]
pub mod collapse {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
