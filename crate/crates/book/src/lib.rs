//! The guide's chapters as doc-tests, so every listing in `book/` compiles
//! and runs with `cargo test`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/request_model.md")]
pub mod request_model {}
#[doc = include_str!("../../../book/src/policies.md")]
pub mod policies {}
#[doc = include_str!("../../../book/src/soft_solver.md")]
pub mod soft_solver {}
#[doc = include_str!("../../../book/src/constrained.md")]
pub mod constrained {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
