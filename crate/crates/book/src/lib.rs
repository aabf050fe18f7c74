//! The chapters of the guide in `book/src`, compiled as doctests so the
//! snippets stay in sync with the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/meshes.md")]
pub mod meshes {}

#[doc = include_str!("../../../book/src/elements.md")]
pub mod elements {}

#[doc = include_str!("../../../book/src/nonlocal.md")]
pub mod nonlocal {}

#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}

#[doc = include_str!("../../../book/src/cases.md")]
pub mod cases {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
